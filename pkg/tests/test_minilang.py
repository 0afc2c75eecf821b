import pytest

from mrkernel.minilang import (
    For,
    MinilangSyntaxError,
    MinilangTypeError,
    parse_source,
)


def test_trivial_function():
    program = parse_source("fn f(a: int): int { return a; }")
    assert len(program.functions) == 1
    fn = program.function("f")
    assert fn.params == (("a", "int"),)
    assert fn.return_type == "int"
    assert len(fn.body) == 1


def test_undeclared_function_rejected():
    with pytest.raises(MinilangTypeError, match="undeclared function"):
        parse_source("fn f(): int { return g(); }")


def test_forward_calls_allowed():
    program = parse_source(
        "fn f(): int { return g(); } fn g(): int { return 1; }"
    )
    assert program.signature("f") == ((), "int")


def test_undeclared_variable_rejected():
    with pytest.raises(MinilangTypeError, match="undeclared variable"):
        parse_source("fn f(): int { return x; }")


def test_syntax_error_has_position():
    with pytest.raises(MinilangSyntaxError, match=r"2:"):
        parse_source("fn f(): int {\n  return 1 +; }")


def test_operator_type_mismatch_rejected():
    with pytest.raises(MinilangTypeError, match="numeric operands"):
        parse_source("fn f(a: matrix): matrix { b = a + 1; return a; }")


def test_condition_must_be_bool():
    with pytest.raises(MinilangTypeError, match="condition must be bool"):
        parse_source("fn f(a: int): int { if (a) { return a; } return 0; }")


def test_mod_is_int_only():
    with pytest.raises(MinilangTypeError, match="'%' needs int"):
        parse_source("fn f(a: real): real { return a % 2; }")


def test_index_needs_matrix():
    with pytest.raises(MinilangTypeError, match="cannot index"):
        parse_source("fn f(a: int): int { return a[0][0]; }")


def test_index_must_be_int():
    with pytest.raises(MinilangTypeError, match="index must be int"):
        parse_source("fn f(a: matrix): real { return a[0.5][0]; }")


def test_call_arity_checked():
    with pytest.raises(MinilangTypeError, match="takes 2 arguments"):
        parse_source("fn f(): matrix { return zeros(1); }")


def test_call_argument_types_checked():
    with pytest.raises(MinilangTypeError, match="must be matrix"):
        parse_source("fn f(): int { return rows(3); }")


def test_return_type_checked():
    with pytest.raises(MinilangTypeError, match="returns int"):
        parse_source("fn f(): int { return 1.5; }")


def test_missing_return_rejected():
    with pytest.raises(MinilangTypeError, match="return on every path"):
        parse_source("fn f(a: int): int { if (a > 0) { return a; } }")


def test_return_on_both_branches_accepted():
    parse_source(
        "fn f(a: int): int { if (a > 0) { return a; } else { return 0; } }"
    )


def test_unreachable_code_rejected():
    with pytest.raises(MinilangTypeError, match="unreachable"):
        parse_source("fn f(): int { return 1; x = 2; }")


def test_duplicate_function_rejected():
    with pytest.raises(MinilangTypeError, match="duplicate function"):
        parse_source("fn f(): int { return 1; } fn f(): int { return 2; }")


def test_duplicate_parameter_rejected():
    with pytest.raises(MinilangTypeError, match="duplicate parameter"):
        parse_source("fn f(a: int, a: int): int { return a; }")


def test_variable_type_is_sticky():
    with pytest.raises(MinilangTypeError, match="cannot assign"):
        parse_source("fn f(): int { x = 1; x = true; return x; }")


def test_int_widens_to_real():
    parse_source("fn f(): real { x = 1.5; x = 2; return x; }")


def test_for_bounds_must_be_int():
    with pytest.raises(MinilangTypeError, match="bounds must be int"):
        parse_source("fn f(): int { for i = 0 to 1.5 { } return 0; }")


def test_void_functions_and_call_statements():
    program = parse_source(
        """
        fn log_nothing(a: int): void { return; }
        fn f(a: int): int { log_nothing(a); return a; }
        """
    )
    assert program.signature("log_nothing") == (("int",), "void")


def test_void_result_not_assignable():
    with pytest.raises(MinilangTypeError, match="void"):
        parse_source(
            """
            fn nop(): void { return; }
            fn f(): int { x = nop(); return 0; }
            """
        )


def test_fig1_transliteration_shape():
    src = """
    fn scalar_multiply(a: matrix, s: real): matrix {
      r = rows(a);
      c = cols(a);
      out = zeros(r, c);
      for i = 0 to r - 1 {
        for j = 0 to c - 1 {
          out[i][j] = a[i][j] * s;
        }
      }
      return out;
    }
    """
    fn = parse_source(src).function("scalar_multiply")
    loops = [s for s in fn.body if isinstance(s, For)]
    assert len(loops) == 1
    inner = [s for s in loops[0].body if isinstance(s, For)]
    assert len(inner) == 1


def test_else_if_chain():
    parse_source(
        """
        fn f(a: int): int {
          if (a > 2) { return 2; }
          else if (a > 1) { return 1; }
          else { return 0; }
        }
        """
    )


def test_comments_and_booleans():
    parse_source(
        """
        // leading comment
        fn f(a: int): bool {
          ok = a > 0 and not (a > 10);  // trailing comment
          return ok or false;
        }
        """
    )
