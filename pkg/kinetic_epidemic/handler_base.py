import json
import logging
import traceback
from abc import ABC, abstractmethod
from functools import lru_cache
from typing import Any, Dict, Generic, List, Optional, TypeVar

from jsonschema import Draft202012Validator, validators
from jsonschema.exceptions import best_match

from .errors import ArgumentError, SimulatorError

logger = logging.getLogger("KineticEpidemic.Handler")


class BaseHandler(ABC):
    """
    Base class of named, schema-described handlers.

    Field builders, initial-condition builders and CLI commands all derive
    from it and register themselves in a HandlerRegistry at import time.
    """

    @property
    @abstractmethod
    def name(self) -> str:
        """Handler name"""
        pass

    @property
    def description(self) -> Optional[str]:
        """Handler description"""
        return None

    @property
    @abstractmethod
    def input_schema(self) -> Dict[str, Any]:
        """JSON schema of the accepted arguments"""
        pass

    def validate_arguments(self, arguments: Dict[str, Any]) -> Optional[str]:
        """
        Validate handler arguments

        Args:
            arguments: handler arguments

        Returns:
            An error message if validation fails, otherwise None
        """
        return check_schema(self.input_schema, arguments)

    @abstractmethod
    def execute(self, arguments: Dict[str, Any], context: Any = None) -> Any:
        """
        Execute the handler

        Args:
            arguments: handler arguments
            context: caller-supplied context (mesh, run options, ...)

        Returns:
            Handler result
        """
        pass

    def run(self, arguments: Dict[str, Any], context: Any = None) -> Any:
        """Validate then execute, raising ArgumentError on invalid input."""
        error = self.validate_arguments(arguments)
        if error:
            raise ArgumentError(f"{self.name}: {error}")
        return self.execute(arguments, context)

    def handle(self, arguments: Dict[str, Any], context: Any = None) -> Dict[str, Any]:
        """
        Execute and standardize the outcome

        Args:
            arguments: handler arguments
            context: caller-supplied context

        Returns:
            {"ok": True, "result": ...} or {"ok": False, "error": {"category", "message", ...}}
        """
        try:
            error = self.validate_arguments(arguments)
            if error:
                logger.error(f"Handler {self.name} argument validation failed: {error}")
                return self.create_error(ArgumentError(error))

            logger.info(f"Executing {self.name} with arguments: {json.dumps(arguments, default=str)}")
            result = self.execute(arguments, context)
            return {"ok": True, "result": result}

        except SimulatorError as e:
            logger.error(f"Handler {self.name} failed: {e}")
            logger.debug(traceback.format_exc())
            return self.create_error(e)
        except Exception as e:
            logger.error(f"Handler {self.name} raised: {str(e)}")
            logger.error(traceback.format_exc())
            return self.create_error(e)

    @staticmethod
    def create_error(exc: Exception) -> Dict[str, Any]:
        if isinstance(exc, SimulatorError):
            payload = exc.to_dict()
        else:
            payload = {"category": "internal", "message": f"{type(exc).__name__}: {exc}"}
        return {"ok": False, "error": payload}


H = TypeVar("H", bound=BaseHandler)


class HandlerRegistry(Generic[H]):
    """Name -> handler registry"""

    def __init__(self, kind: str):
        self.kind = kind
        self._handlers: Dict[str, H] = {}

    def register(self, handler: H) -> None:
        name = handler.name
        if name in self._handlers:
            logger.warning(f"{self.kind} {name} already registered, replacing it")
        self._handlers[name] = handler
        logger.debug(f"Registered {self.kind} {name}, {len(self._handlers)} in total")

    def get(self, name: str) -> Optional[H]:
        return self._handlers.get(name)

    def require(self, name: str) -> H:
        handler = self.get(name)
        if handler is None:
            known = ", ".join(sorted(self._handlers))
            raise ArgumentError(f"unknown {self.kind} '{name}' (known: {known})")
        return handler

    def names(self) -> List[str]:
        return sorted(self._handlers)

    def list(self) -> List[Dict[str, Any]]:
        return [
            {"name": name, "description": handler.description, "inputSchema": handler.input_schema}
            for name, handler in sorted(self._handlers.items())
        ]

    def execute(self, name: str, arguments: Dict[str, Any], context: Any = None) -> Dict[str, Any]:
        handler = self.get(name)
        if handler is None:
            logger.error(f"{self.kind} not found: {name}")
            return BaseHandler.create_error(ArgumentError(f"unknown {self.kind} '{name}'"))
        return handler.handle(arguments, context)

    def __contains__(self, name: str) -> bool:
        return name in self._handlers


def _is_array(checker, instance) -> bool:
    return isinstance(instance, (list, tuple))


# arguments built in code may carry tuples where JSON has arrays
ArgumentValidator = validators.extend(
    Draft202012Validator,
    type_checker=Draft202012Validator.TYPE_CHECKER.redefine("array", _is_array),
)


@lru_cache(maxsize=None)
def _validator(schema_text: str) -> Draft202012Validator:
    schema = json.loads(schema_text)
    ArgumentValidator.check_schema(schema)
    return ArgumentValidator(schema)


def check_schema(schema: Dict[str, Any], arguments: Dict[str, Any]) -> Optional[str]:
    """
    Validate arguments against a JSON schema (draft 2020-12).

    Returns the message of the most relevant violation, or None.
    """
    validator = _validator(json.dumps(schema, sort_keys=True))
    error = best_match(validator.iter_errors(arguments))
    if error is None:
        return None
    where = ".".join(str(part) for part in error.absolute_path)
    return f"{where}: {error.message}" if where else error.message
