#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""Finsler Large - Finsler p-Laplacian 爆破解的构造与验证

读取 JSON 运行配置，执行一个命令并把 CSV/JSON 产物与 manifest 写入输出目录。

启动方式:
    python app.py solve-1d --config data/examples/solve_1d.json --out runs/solve_1d
"""
import logging
import os
import sys
import traceback
from datetime import datetime

from finsler.config import config

handlers = [logging.StreamHandler()]
log_file = None
if config.get('logging.save_to_file', True):
    log_dir = os.path.join(os.path.dirname(os.path.abspath(__file__)), config.get('logging.log_dir', 'logs'))
    os.makedirs(log_dir, exist_ok=True)
    log_file = os.path.join(log_dir, f"finsler_{datetime.now().strftime('%Y%m%d_%H%M%S')}.log")
    handlers.insert(0, logging.FileHandler(log_file, encoding='utf-8'))

logging.basicConfig(
    level=getattr(logging, config.log_level, logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=handlers
)
logger = logging.getLogger("Finsler")


def exception_handler(exctype, value, tb):
    """全局异常处理函数"""
    error_msg = ''.join(traceback.format_exception(exctype, value, tb))
    logger.error(f"未捕获的异常:\n{error_msg}")
    where = f"\n详细信息已记录到日志: {log_file}" if log_file else ""
    print(f"程序遇到了一个错误。\n错误信息: {value}{where}")
    sys.exit(1)


sys.excepthook = exception_handler


def main() -> int:
    """主入口函数"""
    from finsler.cli import main as cli_main

    logger.info("启动 Finsler Large")
    for message in config.get_validation_report()['warnings']:
        logger.warning(f"配置: {message}")
    return cli_main()


if __name__ == "__main__":
    sys.exit(main())
