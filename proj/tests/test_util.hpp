#pragma once

#include <string>

#include "doctest.h"
#include "hsplat/error.hpp"

namespace hsplat::test {

inline ErrorCode error_code_of(const auto& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an hsplat::Error");
    return ErrorCode::io;
}

inline std::string error_text_of(const auto& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

}  // namespace hsplat::test
