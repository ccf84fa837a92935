"""
In-memory sliding-window limiter for the expensive lab endpoints.
"""

import time
from collections import defaultdict, deque
from typing import Callable, Deque, Dict

from fastapi import HTTPException, Request, status


class RateLimiter:
    """
    Per-client sliding window. State lives in the worker process, so each
    uvicorn worker keeps its own window.
    """

    def __init__(
        self,
        requests_limit: int = 10,
        time_window: float = 60.0,
        clock: Callable[[], float] = time.monotonic,
    ):
        self.requests_limit = requests_limit
        self.time_window = time_window
        self.clock = clock
        self.requests: Dict[str, Deque[float]] = defaultdict(deque)

    def reset(self) -> None:
        self.requests.clear()

    async def __call__(self, request: Request):
        client = request.client.host if request.client else "unknown"
        now = self.clock()
        window = self.requests[client]
        while window and now - window[0] >= self.time_window:
            window.popleft()

        if len(window) >= self.requests_limit:
            raise HTTPException(
                status_code=status.HTTP_429_TOO_MANY_REQUESTS,
                detail="Too many expensive requests. Please try again later.",
            )
        window.append(now)


# critical point searches and verification suites
heavy_limiter = RateLimiter(requests_limit=10, time_window=60.0)
