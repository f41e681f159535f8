#pragma once

// Error taxonomy shared by every pipeline stage. Each kind maps onto a
// distinct recovery path: input errors are the caller's fault, backend
// errors may be retried, contract errors mean the LLM never produced a
// schema-valid reply.

#include <stdexcept>
#include <string>
#include <vector>

namespace chatdit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class PersistenceError : public Error {
 public:
  using Error::Error;
};

/// Stored state references data that does not exist (e.g. a missing blob).
class IntegrityError : public PersistenceError {
 public:
  IntegrityError(const std::string& what, std::vector<std::string> ids)
      : PersistenceError(what), ids_(std::move(ids)) {}
  const std::vector<std::string>& ids() const noexcept { return ids_; }

 private:
  std::vector<std::string> ids_;
};

/// LLM replies never satisfied the response schema.
class ContractError : public Error {
 public:
  ContractError(const std::string& agent, const std::string& last_message)
      : Error("agent '" + agent + "' violated its JSON contract: " + last_message),
        agent_(agent),
        last_message_(last_message) {}
  const std::string& agent() const noexcept { return agent_; }
  const std::string& last_message() const noexcept { return last_message_; }

 private:
  std::string agent_;
  std::string last_message_;
};

/// Transport failure, timeout or "busy" answer from a remote backend.
class BackendError : public Error {
 public:
  BackendError(const std::string& what, bool retryable)
      : Error(what), retryable_(retryable) {}
  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

/// A peer spoke the wire protocol incorrectly (bad PNG, wrong dimensions).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Scripted fixture lookups that do not exist. Always a test bug.
class FixtureError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// An article references an image no URL can be produced for.
class RenderError : public Error {
 public:
  using Error::Error;
};

/// A session already has an active turn.
class BusyError : public Error {
 public:
  using Error::Error;
};

}  // namespace chatdit
