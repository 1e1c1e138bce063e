"""Terms, parser, stores and reduction rules of the Lua semantics."""
