#pragma once

#include <stdexcept>
#include <string>

namespace rcdt {

class Error : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

// Operand shapes do not fit the operation.
class DimensionError : public Error {
   public:
    using Error::Error;
};

// A model, run or data configuration is invalid before any compute happens.
class ConfigError : public Error {
   public:
    using Error::Error;
};

// Caller-supplied data violates an operation's precondition.
class InputError : public Error {
   public:
    using Error::Error;
};

class ParseError : public Error {
   public:
    using Error::Error;
};

class IoError : public Error {
   public:
    using Error::Error;
};

class CheckpointError : public Error {
   public:
    using Error::Error;
};

// Non-finite loss or gradient during optimization.
class DivergenceError : public Error {
   public:
    using Error::Error;
};

}  // namespace rcdt
