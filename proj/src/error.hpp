#pragma once
#include <stdexcept>
#include <string>

namespace hemo {

enum class Errc {
  Ok = 0,
  InvalidArgument,
  NonPositiveRate,
  ExponentOrderViolated,
  ScaleTooSmall,
  ResonantParameters,
  MaxEventsExceeded,
  RateOverflow,
  IllegalEvent,
  TruncationLeakTooLarge,
  GridMismatch,
  DegenerateDesign,
  EmptyWindow,
  ScaleMismatch,
  Io,
  Config,
  Internal,
};

class Error : public std::runtime_error {
public:
  Error(Errc c, const std::string& what) : std::runtime_error(what), code_(c) {}
  Errc code() const noexcept { return code_; }

private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc c, const std::string& what) { throw Error(c, what); }

}  // namespace hemo
