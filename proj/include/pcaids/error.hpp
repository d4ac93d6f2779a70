#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace pcaids {

/// Process exit codes used by the command-line tool.
enum class ExitCode : int { ok = 0, usage = 1, data = 2, numerical = 3 };

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::usage; }
};

/// Precondition violation by the caller (bad argument, out-of-range index).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Input data problem: malformed files, schema drift, degenerate columns.
class DataError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::data; }
};

/// Linear algebra or root-finding failure.
class NumericalError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::numerical; }
};

class ZeroVarianceColumn : public DataError {
 public:
  ZeroVarianceColumn(std::vector<Eigen::Index> columns, const std::string& what)
      : DataError(what), columns_(std::move(columns)) {}
  const std::vector<Eigen::Index>& columns() const noexcept { return columns_; }

 private:
  std::vector<Eigen::Index> columns_;
};

class RankDeficient : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// No component exceeded its threshold: the batch carries no anomaly evidence.
class EmptyAffectedSet : public Error {
 public:
  EmptyAffectedSet() : Error("no batch-level anomaly evidence: affected component set is empty") {}
  ExitCode exit_code() const noexcept override { return ExitCode::ok; }
};

}  // namespace pcaids
