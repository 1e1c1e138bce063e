"""
Value store (sigma) and object store (theta).

Both stores are updated in place by the reduction step that owns them.
``fork()`` produces a copy-on-write overlay whose writes never reach the
parent, which is how a rule can be tried without committing its effects.
"""

from typing import Dict, Iterator, List, Optional, Tuple

from lua_semantics.core.terms import (
    NIL, EngineFault, Nil, Number, ObjRef, Ref, Value,
)


class StoreFault(EngineFault):
    """Exception raised when a reference is not in the store's domain."""
    pass


class ValueStore:
    """Mapping from references to values, grown by ``alloc``."""

    def __init__(self, parent: Optional["ValueStore"] = None):
        self._cells: Dict[int, Value] = {}
        self._parent = parent
        self._next_id = parent._next_id if parent else 1
        self.touched: List[int] = []

    def alloc(self, value: Value, hint: str = "") -> Ref:
        ref = Ref(self._next_id, hint)
        self._next_id += 1
        self._cells[ref.id] = value
        self.touched.append(ref.id)
        return ref

    def _lookup(self, ref_id: int) -> Optional[Value]:
        store: Optional[ValueStore] = self
        while store is not None:
            value = store._cells.get(ref_id)
            if value is not None:
                return value
            store = store._parent
        return None

    def read(self, ref: Ref) -> Value:
        value = self._lookup(ref.id)
        if value is None:
            raise StoreFault(f"reference $r{ref.id} is not in the value store")
        return value

    def write(self, ref: Ref, value: Value) -> None:
        if self._lookup(ref.id) is None:
            raise StoreFault(f"reference $r{ref.id} is not in the value store")
        self._cells[ref.id] = value
        self.touched.append(ref.id)

    def __contains__(self, ref: Ref) -> bool:
        return self._lookup(ref.id) is not None

    def __len__(self) -> int:
        return self._next_id - 1

    def fork(self) -> "ValueStore":
        return ValueStore(self)

    def begin_step(self) -> None:
        self.touched = []


class TableObject:
    """A table: insertion-ordered entries plus an optional metatable reference.

    Removed keys stay behind as hidden tombstones so that ``next`` keeps
    working while a traversal clears fields; no accessor ever exposes them.
    Tombstones are dropped when a new key arrives and they are at least as
    many as the live entries.
    """

    __slots__ = ("_entries", "_keys", "_positions", "_dead", "metatable")

    def __init__(self, entries: Optional[Dict[Value, Value]] = None,
                 metatable: Optional[ObjRef] = None):
        self._entries: Dict[Value, Value] = {}
        self._keys: List[Value] = []
        self._positions: Dict[Value, int] = {}
        self._dead = 0
        self.metatable = metatable
        for key, value in (entries or {}).items():
            self.rawset(key, value)

    def rawget(self, key: Value) -> Value:
        return self._entries.get(normalize_key(key), NIL)

    def rawset(self, key: Value, value: Value) -> None:
        key = normalize_key(key)
        old = self._entries.get(key)
        if isinstance(value, Nil):
            if old is not None and not isinstance(old, Nil):
                self._entries[key] = NIL
                self._dead += 1
            return
        if old is None:
            if self._dead and self._dead >= len(self._keys) - self._dead:
                self._rehash()
            self._positions[key] = len(self._keys)
            self._keys.append(key)
        elif isinstance(old, Nil):
            self._dead -= 1
        self._entries[key] = value

    def _rehash(self) -> None:
        live = [key for key in self._keys if not isinstance(self._entries[key], Nil)]
        self._entries = {key: self._entries[key] for key in live}
        self._keys = live
        self._positions = {key: i for i, key in enumerate(live)}
        self._dead = 0

    def items(self) -> Iterator[Tuple[Value, Value]]:
        for key in self._keys:
            value = self._entries[key]
            if not isinstance(value, Nil):
                yield key, value

    def next_entry(self, key: Value) -> Optional[Tuple[Value, Value]]:
        """Entry following ``key`` in traversal order, or None at the end.

        Raises:
            KeyError: If ``key`` is not a key of the table
        """
        if isinstance(key, Nil):
            start = 0
        else:
            key = normalize_key(key)
            if key not in self._positions:
                raise KeyError(key)
            start = self._positions[key] + 1
        for i in range(start, len(self._keys)):
            candidate = self._keys[i]
            value = self._entries[candidate]
            if not isinstance(value, Nil):
                return candidate, value
        return None

    def border(self) -> int:
        """Length of the table: largest n with t[n] non-nil and t[n+1] nil, scanning from 1."""
        n = 0
        while not isinstance(self._entries.get(Number(float(n + 1)), NIL), Nil):
            n += 1
        return n

    def copy(self) -> "TableObject":
        table = TableObject(metatable=self.metatable)
        table._entries = dict(self._entries)
        table._keys = list(self._keys)
        table._positions = dict(self._positions)
        table._dead = self._dead
        return table

    def __len__(self) -> int:
        return len(self._keys) - self._dead

    def __repr__(self) -> str:
        return f"TableObject({dict(self.items())!r}, metatable={self.metatable!r})"


def normalize_key(key: Value) -> Value:
    """Table keys are compared as Lua values; -0.0 and 0.0 are the same key."""
    if isinstance(key, Number) and key.value == 0.0:
        return Number(0.0)
    return key


class ObjectStore:
    """Mapping from object references to tables.

    ``registry`` holds interpreter-wide entries that are not reachable from
    Lua code: the global table, per-type metatables and the original library
    functions that other library services return.
    """

    def __init__(self, parent: Optional["ObjectStore"] = None):
        self._tables: Dict[int, TableObject] = {}
        self._parent = parent
        self._next_id = parent._next_id if parent else 1
        self.registry: Dict[str, Value] = dict(parent.registry) if parent else {}
        self.touched: List[int] = []

    def alloc(self, table: Optional[TableObject] = None) -> ObjRef:
        objref = ObjRef(self._next_id)
        self._next_id += 1
        self._tables[objref.id] = table if table is not None else TableObject()
        self.touched.append(objref.id)
        return objref

    def _lookup(self, obj_id: int) -> Optional[TableObject]:
        store: Optional[ObjectStore] = self
        while store is not None:
            table = store._tables.get(obj_id)
            if table is not None:
                return table
            store = store._parent
        return None

    def get(self, objref: ObjRef) -> TableObject:
        """Table for ``objref``, for reading only."""
        table = self._lookup(objref.id)
        if table is None:
            raise StoreFault(f"object reference $objr{objref.id} is not in the object store")
        return table

    def writable(self, objref: ObjRef) -> TableObject:
        """Table for ``objref`` that may be mutated; copied into a fork on first write."""
        table = self._tables.get(objref.id)
        if table is None:
            table = self.get(objref).copy()
            self._tables[objref.id] = table
        self.touched.append(objref.id)
        return table

    def rawget(self, objref: ObjRef, key: Value) -> Value:
        return self.get(objref).rawget(key)

    def rawset(self, objref: ObjRef, key: Value, value: Value) -> None:
        self.writable(objref).rawset(key, value)

    def metatable_of(self, objref: ObjRef) -> Optional[ObjRef]:
        return self.get(objref).metatable

    def set_metatable(self, objref: ObjRef, metatable: Optional[ObjRef]) -> None:
        self.writable(objref).metatable = metatable

    def __contains__(self, objref: ObjRef) -> bool:
        return self._lookup(objref.id) is not None

    def __len__(self) -> int:
        return self._next_id - 1

    def fork(self) -> "ObjectStore":
        return ObjectStore(self)

    def begin_step(self) -> None:
        self.touched = []


def new_stores() -> Tuple[ValueStore, ObjectStore]:
    return ValueStore(), ObjectStore()
