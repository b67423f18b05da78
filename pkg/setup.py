from setuptools import setup

setup(name='shimcp',
    version='0.1.0',
    description="Exact full conformal prediction sets for sparse high-order interaction models.",
    author="shimcp developers",
    packages=['shimcp'],
    python_requires='>=3.9',
    install_requires=['numpy', 'scipy', 'psutil', 'pandas>=1.5', 'scikit-learn', 'joblib'],
    extras_require={'test': ['pytest']},
    entry_points={'console_scripts': ['shimcp=shimcp.cli:main']}
    )
