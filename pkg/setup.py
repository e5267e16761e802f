# setup.py

"""Setup script."""

from setuptools import setup

with open('requirements.txt', 'r', encoding='UTF-8') as f:
    required: list[str] = f.read().splitlines()

with open("README.md", 'r', encoding='UTF-8') as f:
    long_description: str = f.read()

setup(
    name='wolfsoftware.zonal-dispatch',
    version='0.1.0',
    author='Wolf Software',
    author_email='pypi@wolfsoftware.com',
    description='Bi-level zonal optimisation of distribution networks with microgrids.',
    long_description=long_description,
    long_description_content_type='text/markdown',
    license='MIT',
    packages=['wolfsoftware.zonal_dispatch'],
    package_data={'wolfsoftware.zonal_dispatch': ['data/*.json']},
    include_package_data=True,
    entry_points={
        'console_scripts': [
            'zonal-dispatch=wolfsoftware.zonal_dispatch.cli:main',
        ],
    },
    tests_require=['pytest', 'hypothesis'],
    test_suite='tests',
    install_requires=required,
    keywords=['python', 'power-systems', 'distribution-network', 'microgrid', 'admm', 'optimal-power-flow'],
    url='https://github.com/GitHubToolbox/zonal-dispatch-package',

    project_urls={
        ' Source': 'https://github.com/GitHubToolbox/zonal-dispatch-package',
        ' Tracker': 'https://github.com/GitHubToolbox/zonal-dispatch-package/issues/',
        ' Documentation': 'https://github.com/GitHubToolbox/zonal-dispatch-package',
        ' Sponsor': 'https://github.com/sponsors/WolfSoftware',
    },

    classifiers=[
        # 'Development Status :: 1 - Planning',
        # 'Development Status :: 2 - Pre-Alpha',
        'Development Status :: 3 - Alpha',
        # 'Development Status :: 4 - Beta',
        # 'Development Status :: 5 - Production/Stable',
        'Environment :: Console',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Programming Language :: Python :: 3.12',
        'Operating System :: OS Independent',
        'Topic :: Scientific/Engineering',
    ],
    python_requires='>=3.9',
)
