"""
Error hierarchy
求解器与验证器共用的异常类型
"""

from typing import Any, Optional


class FinslerError(Exception):
    """所有库内异常的基类"""
    pass


class ConfigValidationError(FinslerError):
    """配置或运行配置校验失败"""
    pass


class InvalidNormError(FinslerError):
    """范数参数在构造时被拒绝"""
    pass


class ZeroVectorError(FinslerError):
    """H 在原点不可微"""
    pass


class NegativeInputError(FinslerError):
    pass


class NonpositiveInputError(FinslerError):
    pass


class OutOfRangeError(FinslerError):
    """参数超出 Ψ 的值域"""
    pass


class InconclusiveError(FinslerError):
    """部分积分既不收敛也不发散"""
    pass


class DivergentIntegralError(FinslerError):
    """Keller-Osserman 条件不成立，积分发散"""
    pass


class NoRootError(FinslerError):
    """区间过长，需要平坦区构造"""
    pass


class BracketFailError(FinslerError):
    pass


class OutsideBallError(FinslerError):
    pass


class OutsideDomainError(FinslerError):
    pass


class BallViolationError(FinslerError):
    """Wulff 球与边界的接触检查失败"""
    pass


class NonconvexDetectedError(FinslerError):
    """线搜索发现能量非凸，通常意味着范数无效"""
    pass


class _FlaggedResultError(FinslerError):
    """携带最优迭代结果的异常"""

    def __init__(self, message: str, best: Optional[Any] = None):
        super().__init__(message)
        self.best = best


class NoConvergenceError(_FlaggedResultError):
    pass


class NotStabilizedError(_FlaggedResultError):
    pass


class SolverStallWarning(RuntimeWarning):
    """对偶范数上升法未能改进采样网格上的值"""
    pass
