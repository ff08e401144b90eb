"""Client for external mask providers.

A provider is any HTTP endpoint that accepts a volume and returns a binary
calcification mask — the stand-in for a model inference service. The wire
envelope is JSON both ways: {"manifest": <text>, "payload_b64": <base64>},
carrying the raw-volume fixture format in the request and the packed-bit
mask format in the response. An optional slice_range narrows the request.
"""

from __future__ import annotations

import base64
import os
from dataclasses import dataclass

import httpx
import numpy as np

from .errors import CacError, ProviderError
from .mask import load_mask
from .rawio import save_raw_volume
from .volume import Volume

PROVIDER_URL_ENV = "CACSCORE_PROVIDER_URL"

DEFAULT_TIMEOUT_S = 30.0
DEFAULT_RETRIES = 2


def volume_envelope(volume: Volume, slice_range: tuple[int, int] | None = None) -> dict:
    manifest, payload = save_raw_volume(volume)
    doc = {"manifest": manifest, "payload_b64": base64.b64encode(payload).decode("ascii")}
    if slice_range is not None:
        doc["slice_range"] = list(slice_range)
    return doc


def mask_from_envelope(doc: dict) -> np.ndarray:
    try:
        manifest = doc["manifest"]
        payload = base64.b64decode(doc["payload_b64"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ProviderError(f"malformed mask envelope: {exc}") from exc
    return load_mask(manifest, payload)


@dataclass
class ProviderClient:
    """Mask provider contract: endpoint, timeout, retry budget.

    transport is an httpx transport override for tests.
    """

    endpoint: str
    timeout_s: float = DEFAULT_TIMEOUT_S
    retries: int = DEFAULT_RETRIES
    transport: httpx.BaseTransport | None = None

    def fetch_mask(
        self, volume: Volume, slice_range: tuple[int, int] | None = None
    ) -> np.ndarray:
        """POST the volume, return the mask; enforces the shape contract."""
        request = volume_envelope(volume, slice_range)
        last_error: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                with httpx.Client(transport=self.transport, timeout=self.timeout_s) as client:
                    response = client.post(self.endpoint, json=request)
                if response.status_code >= 500:
                    last_error = ProviderError(
                        f"provider returned {response.status_code}: {response.text[:200]}"
                    )
                    continue
                if response.status_code != 200:
                    raise ProviderError(
                        f"provider returned {response.status_code}: {response.text[:200]}"
                    )
                try:
                    mask = mask_from_envelope(response.json())
                except (ValueError, CacError) as exc:  # malformed 200: no retry
                    raise ProviderError(f"unparseable provider response: {exc}") from exc
                break
            except httpx.HTTPError as exc:
                last_error = exc
        else:
            raise ProviderError(f"provider unreachable after {self.retries + 1} attempts: {last_error}")
        if mask.shape != volume.shape:
            raise ProviderError(
                f"provider mask shape {mask.shape} violates the contract: "
                f"request volume shape is {volume.shape}"
            )
        return mask


def provider_from_env(endpoint: str | None = None, **kwargs) -> ProviderClient:
    """Build a client from an explicit endpoint or the documented env var."""
    url = endpoint or os.environ.get(PROVIDER_URL_ENV)
    if not url:
        raise ProviderError(
            f"no provider endpoint given and {PROVIDER_URL_ENV} is not set"
        )
    return ProviderClient(endpoint=url, **kwargs)
