#pragma once

#include <doctest.h>

#include "estlab/error.hpp"

// Checks that `expr` throws estlab::Error carrying `code`.
#define CHECK_THROWS_CODE(expr, expected)                                    \
    do {                                                                     \
        bool thrown_ = false;                                                \
        try {                                                                \
            (void)(expr);                                                    \
        } catch (const estlab::Error& e_) {                                  \
            thrown_ = true;                                                  \
            CHECK_MESSAGE(e_.code() == (expected), e_.what());               \
        }                                                                    \
        CHECK_MESSAGE(thrown_, "expected estlab::Error from " #expr);        \
    } while (0)
