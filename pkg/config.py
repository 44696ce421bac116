"""
Configuración del toolkit
Lee variables de entorno (con soporte de .env) y las valida con pydantic
"""

import os
from pydantic import BaseModel, Field
from dotenv import load_dotenv

load_dotenv()


class Settings(BaseModel):
    """Parámetros globales numéricos y de ejecución"""
    log_level: str = Field("INFO", description="Nivel de logging")
    rank_tol: float = Field(1e-10, gt=0, description="Tolerancia relativa para el rango de Ψ̂")
    zero_tol: float = Field(1e-12, ge=0, description="Umbral |valor| para contar un coeficiente como no nulo")
    xi_clamp: float = Field(1e-6, gt=0, lt=0.5, description="Recorte de probabilidades antes de tan/log")
    desk_scale: int = Field(4, ge=1, description="Factor de reducción para experimentos de escritorio")
    workers: int = Field(1, ge=1, description="Hilos para los ensayos de un experimento")
    bh_iters: int = Field(100, ge=0, description="Rondas de la alternancia de BH")

    @classmethod
    def from_env(cls) -> "Settings":
        """Construir la configuración desde el entorno"""
        return cls(
            log_level=os.getenv("LOG_LEVEL", "INFO"),
            rank_tol=float(os.getenv("CS_RANK_TOL", "1e-10")),
            zero_tol=float(os.getenv("CS_ZERO_TOL", "1e-12")),
            xi_clamp=float(os.getenv("CS_XI_CLAMP", "1e-6")),
            desk_scale=int(os.getenv("CS_DESK_SCALE", "4")),
            workers=int(os.getenv("CS_WORKERS", "1")),
            bh_iters=int(os.getenv("CS_BH_ITERS", "100")),
        )


settings = Settings.from_env()
