from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Precisão
    PRECISION_BITS: int = 128  # Precisão de trabalho padrão (bits)
    ERROR_BITS: int = 64  # Precisão fixa para cálculos que só alimentam o termo de erro
    MAX_PRECISION_BITS: int = 1024  # Teto para as tentativas com precisão dobrada

    # Expansão
    DEFAULT_ORDER: int = 2  # r0 quando o problema não informa
    DEFAULT_FROM: int = 0  # n0 quando o problema não informa

    # Séries e continuação analítica
    MAX_TAIL_TERMS: int = 4096  # Limite de termos de Taylor/Frobenius e da busca do majorante
    STEP_RATIO: float = 0.45  # Passo máximo como fração da distância até o conjunto singular
    MAX_PATH_STEPS: int = 20000  # Limite de passos de continuação por caminho

    # Positividade
    POSITIVITY_MAX_CROSSOVER: int = 1_000_000  # Maior índice de cruzamento procurado
    POSITIVITY_MAX_PREFIX: int = 20_000  # Maior prefixo verificado por desenrolamento exato

    # Logging
    LOG_LEVEL: str = "INFO"

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
        case_sensitive=True,
    )


settings = Settings()
