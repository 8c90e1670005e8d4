"""
训练运行查询服务启动脚本
使用 Uvicorn 启动 FastAPI 应用
"""

import logging
import os

import uvicorn

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def serve(host: str = None, port: int = None, runs_dir: str = None):
    """
    启动 FastAPI 应用

    :param host: 监听地址, 默认 API_HOST 或 0.0.0.0
    :param port: 监听端口, 默认 API_PORT 或 2381
    :param runs_dir: 运行目录, 默认 RUNS_DIR 或 ./runs
    """
    if runs_dir:
        os.environ["RUNS_DIR"] = runs_dir
    host = host or os.getenv("API_HOST", "0.0.0.0")
    port = port or int(os.getenv("API_PORT", "2381"))
    logger.info(f"🚀 启动训练运行查询服务 {host}:{port}")
    uvicorn.run(
        "core.routers:app",
        host=host,
        port=port,
        reload=False,
        log_level="info",
        access_log=True
    )


if __name__ == "__main__":
    serve()
