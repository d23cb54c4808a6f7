# Finsler large-solution toolkit
# 各向异性 p-Laplacian 爆破解的数值构造与验证

__version__ = "0.3.0"

from .errors import FinslerError, SolverStallWarning

__all__ = ['FinslerError', 'SolverStallWarning', '__version__']
