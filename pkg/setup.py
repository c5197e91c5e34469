from setuptools import setup, find_packages

with open('requirements.txt') as f:
    requirements = f.read().splitlines()

setup(name='hillsum',
      version='1.0',
      packages=find_packages(),
      install_requires=requirements,
      package_data={'hillsum': ['data/*.tsv']},
      entry_points={'console_scripts': ['hillsum = hillsum.__main__:main']}
)
