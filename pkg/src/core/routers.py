from typing import Optional

from fastapi import FastAPI, Path, Query
from fastapi.middleware.cors import CORSMiddleware
from core.apis import RunInspector, ServiceResponse
import logging
import os

# 配置日志
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

VERSION = "1.0.0"

# 全局的运行查询实例
inspector = RunInspector(runs_dir=os.getenv('RUNS_DIR', './runs'))


app = FastAPI(
    title="CR-Match Runs API",
    description="训练运行查询服务",
    version=VERSION
)

if os.getenv("ENABLE_CORS", "0") == "1":
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_credentials=True,
        allow_methods=["*"],
        allow_headers=["*"],
    )


@app.on_event("startup")
async def startup_event():
    logger.info(f"🚀 启动训练运行查询服务, RUNS_DIR={inspector.runs_dir}")


@app.get("/api/v1/runs")
async def list_runs() -> ServiceResponse:
    """列出所有运行"""
    return inspector.list_runs()


@app.get("/api/v1/runs/{run}/config")
async def get_config(run: str = Path(..., description="运行名称")) -> ServiceResponse:
    return inspector.get_config(run)


@app.get("/api/v1/runs/{run}/metrics")
async def get_metrics(
    run: str = Path(..., description="运行名称"),
    tail: Optional[int] = Query(None, ge=0, description="只返回最后 N 行")
) -> ServiceResponse:
    return inspector.get_metrics(run, tail)


@app.get("/api/v1/runs/{run}/evaluate")
async def evaluate_run(run: str = Path(..., description="运行名称")) -> ServiceResponse:
    """
    用检查点评估测试集错误率 (原始参数与 EMA)
    """
    logger.info(f"📊 请求评估运行: {run}")
    return inspector.evaluate_run(run)


@app.get("/api/v1/runs/{run}/feature-stats")
async def feature_stats(
    run: str = Path(..., description="运行名称"),
    n: int = Query(100, ge=1, description="使用的测试图像数")
) -> ServiceResponse:
    logger.info(f"📊 请求特征距离统计: {run} (n={n})")
    return inspector.feature_stats(run, n)


@app.get("/health")
async def health_check():
    """健康检查端点"""
    return {"status": "healthy", "service": "crmatch-api"}


@app.get("/")
async def root():
    """根路径"""
    return {
        "message": "CR-Match Runs API",
        "version": VERSION,
        "endpoints": [
            "GET /api/v1/runs - 列出运行",
            "GET /api/v1/runs/{run}/config - 运行配置",
            "GET /api/v1/runs/{run}/metrics?tail=N - 训练指标",
            "GET /api/v1/runs/{run}/evaluate - 测试集错误率",
            "GET /api/v1/runs/{run}/feature-stats?n=N - 特征余弦距离统计"
        ]
    }
