#pragma once

#include <stdexcept>
#include <string>

namespace cvc {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
  ConfigError(std::string field, const std::string& what)
      : Error(what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

class IngestError : public Error {
public:
  enum class Kind { unreadable, unresolved_image, bad_reference, no_pairs, schema };
  IngestError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

private:
  Kind kind_;
};

// Service layer failures. Unavailable is retryable upstream, the others are not.
class ServiceError : public Error {
public:
  using Error::Error;
};
class ServiceUnavailable : public ServiceError {
public:
  using ServiceError::ServiceError;
};
class ProtocolError : public ServiceError {
public:
  using ServiceError::ServiceError;
};
class RequestError : public ServiceError {
public:
  RequestError(int status, const std::string& what) : ServiceError(what), status_(status) {}
  int status() const noexcept { return status_; }

private:
  int status_;
};

class ParseError : public Error {
public:
  using Error::Error;
};

class EntityNotFound : public Error {
public:
  using Error::Error;
};

// An instance dropped from the pipeline for a recorded, non-fatal reason.
class InstanceSkipped : public Error {
public:
  InstanceSkipped(std::string reason, const std::string& what)
      : Error(what), reason_(std::move(reason)) {}
  const std::string& reason() const noexcept { return reason_; }

private:
  std::string reason_;
};

class ContractViolation : public Error {
public:
  using Error::Error;
};

class StageError : public Error {
public:
  using Error::Error;
};

}  // namespace cvc
