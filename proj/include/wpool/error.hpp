#pragma once

#include <stdexcept>
#include <string>

namespace wpool {

enum class Errc {
  io_error,
  format_error,
  truncated_payload,
  shape_mismatch,
  out_of_range,
  invalid_config,
  insufficient_data,
  capacity_exceeded,
  not_calibrated,
  lut_mismatch,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace wpool
