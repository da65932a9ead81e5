#pragma once

#include <stdexcept>
#include <string>

namespace mtlsynth {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
  ParseError(const std::string& message, int line, int column)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

private:
  int line_;
  int column_;
};

/// Formula outside the supported MTL fragment (negated Until, unbounded Eventually, ...).
class UnsupportedFragment : public Error {
public:
  using Error::Error;
};

/// A temporal window reaches past the end of the trajectory.
class HorizonError : public Error {
public:
  using Error::Error;
};

class DimensionError : public Error {
public:
  using Error::Error;
};

class GeometryError : public Error {
public:
  using Error::Error;
};

class ModelError : public Error {
public:
  using Error::Error;
};

/// Feedback linearization evaluated at (near) zero speed.
class SingularityError : public Error {
public:
  using Error::Error;
};

class ScenarioError : public Error {
public:
  using Error::Error;
};

}  // namespace mtlsynth
