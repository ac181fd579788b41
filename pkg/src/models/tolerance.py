from pydantic import BaseModel, Field

from src.config import settings


class ToleranceConfig(BaseModel):
    """Numerical tolerances passed by value to every service."""
    abs_tol: float = Field(default=1e-12, gt=0)
    rel_tol: float = Field(default=1e-12, gt=0)
    max_terms: int = Field(default=100000, ge=1)
    theta_tol: float = Field(default=1e-12, gt=0)

    class Config:
        frozen = True

    @classmethod
    def from_settings(cls, **overrides) -> "ToleranceConfig":
        """Build from application settings, applying any non-None overrides."""
        values = {
            "abs_tol": settings.ABS_TOL,
            "rel_tol": settings.REL_TOL,
            "max_terms": settings.MAX_TERMS,
            "theta_tol": settings.THETA_TOL,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)
