import uvicorn
from mcp.server.fastmcp.utilities.logging import configure_logging

from tis.config import get_settings


def main():
    settings = get_settings()
    configure_logging(settings.log_level)
    uvicorn.run(
        "tis.app:app",  # import path to your `app`
        host=settings.host,
        port=settings.port,
        reload=settings.reload,
    )
