# Tests package for the Lua reduction-semantics engine