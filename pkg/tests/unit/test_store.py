"""
Unit tests for the value and object stores.
"""

import pytest

from lua_semantics.core.store import ObjectStore, StoreFault, TableObject, ValueStore, new_stores
from lua_semantics.core.terms import NIL, TRUE, Number, ObjRef, Ref, String


class TestValueStore:
    """Test cases for the ValueStore class."""

    def test_alloc_and_read(self):
        """Test that allocation returns fresh references."""
        sigma = ValueStore()
        first = sigma.alloc(Number(1), "x")
        second = sigma.alloc(String("a"))

        assert first != second
        assert sigma.read(first) == Number(1)
        assert sigma.read(second) == String("a")
        assert len(sigma) == 2
        assert first.hint == "x"

    def test_write(self):
        """Test overwriting a cell, nil included."""
        sigma = ValueStore()
        ref = sigma.alloc(Number(1))
        sigma.write(ref, NIL)
        assert sigma.read(ref) == NIL
        assert ref in sigma

    def test_dangling_reference(self):
        """Test that references outside the domain are engine faults."""
        sigma = ValueStore()
        with pytest.raises(StoreFault):
            sigma.read(Ref(7))
        with pytest.raises(StoreFault):
            sigma.write(Ref(7), TRUE)
        assert Ref(7) not in sigma

    def test_touched_is_reset_per_step(self):
        """Test the record of references written during a step."""
        sigma = ValueStore()
        ref = sigma.alloc(Number(1))
        assert sigma.touched == [ref.id]
        sigma.begin_step()
        assert sigma.touched == []
        sigma.write(ref, Number(2))
        assert sigma.touched == [ref.id]

    def test_fork_does_not_leak_writes(self):
        """Test that a fork sees the parent but never writes back."""
        sigma = ValueStore()
        ref = sigma.alloc(Number(1))
        fork = sigma.fork()

        fork.write(ref, Number(2))
        extra = fork.alloc(Number(3))

        assert fork.read(ref) == Number(2)
        assert sigma.read(ref) == Number(1)
        assert extra not in sigma
        assert len(sigma) == 1


class TestTableObject:
    """Test cases for the TableObject class."""

    def test_rawget_missing_is_nil(self):
        """Test that absent keys read as nil."""
        assert TableObject().rawget(String("x")) == NIL

    def test_insertion_order(self):
        """Test that traversal follows insertion order."""
        table = TableObject()
        table.rawset(String("b"), Number(1))
        table.rawset(String("a"), Number(2))
        table.rawset(Number(1), TRUE)
        assert [key for key, _ in table.items()] == [String("b"), String("a"), Number(1)]

    def test_nil_assignment_removes(self):
        """Test that assigning nil removes the entry from every view."""
        table = TableObject({String("a"): Number(1), String("b"): Number(2)})
        table.rawset(String("a"), NIL)
        assert table.rawget(String("a")) == NIL
        assert list(table.items()) == [(String("b"), Number(2))]
        assert len(table) == 1

    def test_next_entry_across_removal(self):
        """Test that next keeps working when the current key is cleared."""
        table = TableObject({String("a"): Number(1), String("b"): Number(2)})
        key, _ = table.next_entry(NIL)
        table.rawset(key, NIL)
        assert table.next_entry(key) == (String("b"), Number(2))
        assert table.next_entry(String("b")) is None

    def test_tombstones_dropped_when_growing(self):
        """Test that cleared keys are forgotten once enough new keys arrive."""
        table = TableObject({Number(i): TRUE for i in range(1, 9)})
        for i in range(1, 7):
            table.rawset(Number(i), NIL)
        assert len(table._keys) == 8

        table.rawset(String("new"), TRUE)
        assert table._keys == [Number(7), Number(8), String("new")]
        assert list(table.items()) == [(Number(7), TRUE), (Number(8), TRUE), (String("new"), TRUE)]
        assert len(table) == 3
        with pytest.raises(KeyError):
            table.next_entry(Number(1))

    def test_revived_key_keeps_its_place(self):
        """Test that setting a cleared key again does not move it to the end."""
        table = TableObject({String("a"): Number(1), String("b"): Number(2), String("c"): Number(3)})
        table.rawset(String("a"), NIL)
        table.rawset(String("a"), Number(4))
        assert [key for key, _ in table.items()] == [String("a"), String("b"), String("c")]
        assert table.next_entry(String("a")) == (String("b"), Number(2))
        assert len(table) == 3

    def test_next_entry_unknown_key(self):
        """Test that an unknown key is reported."""
        with pytest.raises(KeyError):
            TableObject().next_entry(String("zz"))

    def test_border(self):
        """Test the length of sequences."""
        table = TableObject({Number(i): Number(i * 10) for i in (1, 2, 3)})
        assert table.border() == 3
        table.rawset(Number(5), TRUE)
        assert table.border() == 3
        assert TableObject({String("x"): TRUE}).border() == 0

    def test_negative_zero_key(self):
        """Test that -0 and 0 index the same field."""
        table = TableObject()
        table.rawset(Number(-0.0), String("zero"))
        assert table.rawget(Number(0)) == String("zero")

    def test_copy_is_independent(self):
        """Test that a copy does not share entries."""
        table = TableObject({Number(1): TRUE}, metatable=ObjRef(9))
        clone = table.copy()
        clone.rawset(Number(2), TRUE)
        assert table.rawget(Number(2)) == NIL
        assert clone.metatable == ObjRef(9)


class TestObjectStore:
    """Test cases for the ObjectStore class."""

    def test_alloc_and_access(self):
        """Test raw access through references."""
        theta = ObjectStore()
        objref = theta.alloc()
        theta.rawset(objref, String("k"), Number(4))
        assert theta.rawget(objref, String("k")) == Number(4)
        assert objref in theta
        assert len(theta) == 1

    def test_metatables(self):
        """Test setting and reading a metatable reference."""
        theta = ObjectStore()
        table, meta = theta.alloc(), theta.alloc()
        assert theta.metatable_of(table) is None
        theta.set_metatable(table, meta)
        assert theta.metatable_of(table) == meta

    def test_missing_object(self):
        """Test that unknown object references are engine faults."""
        with pytest.raises(StoreFault):
            ObjectStore().get(ObjRef(3))

    def test_fork_copies_on_write(self):
        """Test that a fork mutates its own copy of a table."""
        theta = ObjectStore()
        objref = theta.alloc()
        theta.rawset(objref, Number(1), TRUE)
        theta.registry["globals"] = objref

        fork = theta.fork()
        fork.rawset(objref, Number(1), NIL)

        assert fork.rawget(objref, Number(1)) == NIL
        assert theta.rawget(objref, Number(1)) == TRUE
        assert fork.registry["globals"] == objref

    def test_touched(self):
        """Test that writes are recorded per step."""
        theta = ObjectStore()
        objref = theta.alloc()
        theta.begin_step()
        theta.rawget(objref, Number(1))
        assert theta.touched == []
        theta.rawset(objref, Number(1), TRUE)
        assert theta.touched == [objref.id]

    def test_new_stores(self):
        """Test that a fresh pair of stores is empty."""
        sigma, theta = new_stores()
        assert len(sigma) == 0
        assert len(theta) == 0
