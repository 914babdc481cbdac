from functools import lru_cache
from typing import Literal

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Harness and protocol settings loaded from FLAT_* environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="FLAT_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Application
    app_name: str = "FLAT Harness"
    log_level: str = "INFO"

    # Cryptography
    curve: Literal["NIST256p", "SECP256k1"] = "NIST256p"

    # Protocol timers (simulated ms on the memory network)
    await_timeout_ms: int = Field(default=500, gt=0)
    max_restarts: int = Field(default=3, ge=0)
    idp_session_timeout_ms: int = Field(default=5000, gt=0)
    assertion_lifetime_s: int = Field(default=300, gt=0)
    link_latency_ms: int = Field(default=1, ge=0)

    # Time anchors (unix seconds) so seeded material and runs are reproducible
    sim_epoch: int = 1767225600
    cert_not_before: int = 1704067200
    cert_lifetime_s: int = 20 * 365 * 24 * 3600

    # Harness
    default_runs: int = Field(default=100, ge=1)
    default_seed: int = 0
    client_count: int = Field(default=4, ge=1)
    material_dir: str = "./material"

    # UDP binding
    udp_host: str = "127.0.0.1"
    udp_timeout_ms: int = Field(default=500, gt=0)

    @property
    def await_timeout_s(self) -> float:
        return self.await_timeout_ms / 1000

    @property
    def udp_timeout_s(self) -> float:
        return self.udp_timeout_ms / 1000


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()


settings = get_settings()
