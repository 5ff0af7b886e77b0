from setuptools import find_packages, setup

setup(
    name='spectral-captcha',
    version='0.3.0',
    description='Spectrally perturbed audio CAPTCHAs and the tools to attack and detect them',
    packages=find_packages(exclude=['tests', 'tests.*']),
    py_modules=['configs', 'run'],
    package_data={'spectral_captcha': ['data/*.dict']},
    python_requires='>=3.8',
    install_requires=[
        'click>=8.0',
        'Flask>=2.2',
        'Flask-Limiter>=3.0',
        'nltk>=3.8',
        'numpy>=1.22',
        'prometheus_client>=0.14',
        'py-healthcheck>=1.10',
        'pyyaml>=6.0',
        'requests>=2.28',
        'scikit-learn>=1.1',
        'scipy>=1.8',
    ],
    entry_points={
        'console_scripts': ['spectral-captcha=spectral_captcha.cli:main'],
    },
)
