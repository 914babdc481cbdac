import threading
from typing import Callable, Dict, Generic, List, Optional, Type, TypeVar

ModelType = TypeVar("ModelType")


class BaseRepository(Generic[ModelType]):
    """In-memory repository with common CRUD operations, keyed by `id`."""

    def __init__(self, model: Type[ModelType]):
        self.model = model
        self._items: Dict[int, ModelType] = {}
        self._next_id = 1
        self._lock = threading.RLock()

    def get_by_id(self, id: int) -> Optional[ModelType]:
        """Get a record by ID."""
        with self._lock:
            return self._items.get(id)

    def filter(self, predicate: Callable[[ModelType], bool]) -> List[ModelType]:
        with self._lock:
            return [item for item in self._items.values() if predicate(item)]

    def create(self, id: Optional[int] = None, **kwargs) -> ModelType:
        """Create a new record; `id` defaults to the next free counter value."""
        with self._lock:
            if id is None:
                id = self._next_id
            self._next_id = max(self._next_id, id + 1)
            instance = self.model(id=id, **kwargs)
            self._items[id] = instance
            return instance

    def update(self, instance: ModelType, **kwargs) -> ModelType:
        """Update an existing record."""
        with self._lock:
            for key, value in kwargs.items():
                if hasattr(instance, key):
                    setattr(instance, key, value)
            return instance

    def delete(self, instance: ModelType) -> None:
        """Delete a record."""
        with self._lock:
            self._items.pop(instance.id, None)

    def __len__(self) -> int:
        return len(self._items)
