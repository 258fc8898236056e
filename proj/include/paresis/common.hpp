#pragma once
#include <stdexcept>
#include <string>

namespace paresis {

inline constexpr const char* kVersion = "0.1.0";

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// shape or precondition violation in a numeric or model operation
struct ContractError : Error {
    using Error::Error;
};

// malformed input file (wrong arity, bad syntax)
struct ParseError : Error {
    using Error::Error;
};

// well-formed input carrying invalid values (non-finite, unknown label)
struct ValidationError : Error {
    using Error::Error;
};

// bad configuration (split fractions, structure files, CLI flags)
struct ConfigError : Error {
    using Error::Error;
};

// evidence with zero joint probability under the fitted model
struct ImpossibleEvidenceError : Error {
    using Error::Error;
};

// non-finite loss during training; message names epoch and batch
struct DivergenceError : Error {
    using Error::Error;
};

} // namespace paresis
