#pragma once

#include <stdexcept>
#include <string>

namespace scgnn {

/// Coarse failure class; the CLI maps it to a process exit code.
enum class ErrorKind { Validation, Data, Runtime };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string &what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

#define SCGNN_DEFINE_ERROR(Name, Kind)                                        \
  class Name : public Error {                                                  \
  public:                                                                      \
    explicit Name(const std::string &what)                                     \
        : Error(ErrorKind::Kind, #Name ": " + what) {}                         \
  };

// ingestion / persistence
SCGNN_DEFINE_ERROR(IngestError, Data)
SCGNN_DEFINE_ERROR(SchemaError, Data)
SCGNN_DEFINE_ERROR(DataError, Data)
SCGNN_DEFINE_ERROR(IoError, Runtime)
// configuration
SCGNN_DEFINE_ERROR(SpecError, Validation)
SCGNN_DEFINE_ERROR(ConfigError, Validation)
// algorithms
SCGNN_DEFINE_ERROR(EngineError, Runtime)
SCGNN_DEFINE_ERROR(OracleError, Runtime)
SCGNN_DEFINE_ERROR(ModelError, Runtime)

#undef SCGNN_DEFINE_ERROR

class TrainError : public Error {
public:
  TrainError(int epoch, const std::string &what)
      : Error(ErrorKind::Runtime,
              "TrainError at epoch " + std::to_string(epoch) + ": " + what),
        epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

private:
  int epoch_;
};

} // namespace scgnn
