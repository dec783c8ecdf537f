#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <variant>

namespace relay {

enum class Errc {
  encoding_failure,
  already_done,
  invalid_state,
  unknown_role,
  config_error,
  mailbox_full,
  dead_agent,
  store_full,
  not_found,
  unknown_service,
  unknown_replica,
  replica_unavailable,
  no_replicas,
  pool_exhausted,
  container_conflict,
  dead_container,
  io_error,
  protocol_error,
};

// Stable short names. These double as the `Failed(...)` reasons written to
// the output file, so changing one changes the output format.
inline const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::encoding_failure: return "encoding_failure";
    case Errc::already_done: return "already_done";
    case Errc::invalid_state: return "invalid_state";
    case Errc::unknown_role: return "unknown_role";
    case Errc::config_error: return "config_error";
    case Errc::mailbox_full: return "mailbox_full";
    case Errc::dead_agent: return "dead_agent";
    case Errc::store_full: return "store_full";
    case Errc::not_found: return "not_found";
    case Errc::unknown_service: return "unknown_service";
    case Errc::unknown_replica: return "unknown_replica";
    case Errc::replica_unavailable: return "replica_unavailable";
    case Errc::no_replicas: return "no_replicas";
    case Errc::pool_exhausted: return "pool";
    case Errc::container_conflict: return "container_conflict";
    case Errc::dead_container: return "dead_container";
    case Errc::io_error: return "io_error";
    case Errc::protocol_error: return "protocol_error";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Value-or-error carrier for asynchronous completions, where throwing across
/// an executor boundary is not an option.
template <class T>
class Result {
 public:
  Result(T value) : v_(std::move(value)) {}
  Result(Error error) : v_(std::move(error)) {}

  bool ok() const noexcept { return v_.index() == 0; }
  explicit operator bool() const noexcept { return ok(); }

  T& value() & {
    if (!ok()) throw std::get<1>(v_);
    return std::get<0>(v_);
  }
  const T& value() const& {
    if (!ok()) throw std::get<1>(v_);
    return std::get<0>(v_);
  }
  T&& value() && {
    if (!ok()) throw std::get<1>(v_);
    return std::get<0>(std::move(v_));
  }

  const Error& error() const { return std::get<1>(v_); }

 private:
  std::variant<T, Error> v_;
};

}  // namespace relay
