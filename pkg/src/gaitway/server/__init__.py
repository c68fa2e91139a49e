from .service import AuthError, AuthorizationError, IngestionService, NotFoundError, ServiceError

__all__ = [
    "IngestionService",
    "ServiceError",
    "AuthError",
    "AuthorizationError",
    "NotFoundError",
]
