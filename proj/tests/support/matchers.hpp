#pragma once

#include <catch2/catch_amalgamated.hpp>

#include "flowvo/core.hpp"

// Catch2 matcher asserting both the exception type and its error code.
struct ErrorCodeMatcher : Catch::Matchers::MatcherGenericBase {
    flowvo::ErrorCode expected;
    explicit ErrorCodeMatcher(flowvo::ErrorCode c) : expected(c) {}
    bool match(const flowvo::Error& e) const { return e.code() == expected; }
    std::string describe() const override {
        return std::string("has error code ") + flowvo::to_string(expected);
    }
};

inline ErrorCodeMatcher ErrorMatches(flowvo::ErrorCode c) { return ErrorCodeMatcher(c); }
