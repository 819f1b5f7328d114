#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bfqr {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& column)
      : Error("schema error: column '" + column + "' not found"), column_(column) {}
  const std::string& column() const { return column_; }

 private:
  std::string column_;
};

// row is 1-based over data rows (the header is row 0).
class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::string column, const std::string& cell)
      : Error("parse error at row " + std::to_string(row) + ", column '" + column +
              "': cannot parse '" + cell + "'"),
        row_(row),
        column_(std::move(column)) {}
  std::size_t row() const { return row_; }
  const std::string& column() const { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

class MissingGroupError : public Error {
 public:
  explicit MissingGroupError(int group)
      : Error("group " + std::to_string(group) + " has no calibration samples"), group_(group) {}
  int group() const { return group_; }

 private:
  int group_;
};

class SizeGuardError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& what)
      : Error("I/O error on '" + path + "': " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace bfqr
