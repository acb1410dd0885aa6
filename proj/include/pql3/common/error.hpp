#pragma once

#include <stdexcept>
#include <string>

namespace pql3 {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define PQL3_ERROR(Name)               \
  struct Name : Error {                \
    using Error::Error;                \
  }

PQL3_ERROR(ParameterError);
PQL3_ERROR(RangeError);
PQL3_ERROR(IncompatibleError);
PQL3_ERROR(KeyError);
PQL3_ERROR(ShapeError);
PQL3_ERROR(CalibrationError);
PQL3_ERROR(TableError);
PQL3_ERROR(CapacityError);
PQL3_ERROR(ConfigError);
PQL3_ERROR(CompileError);
PQL3_ERROR(PlanError);
PQL3_ERROR(ProtocolError);
PQL3_ERROR(IoError);
PQL3_ERROR(DivisionError);

#undef PQL3_ERROR

// Raised when the worst-case noise ledger says a ciphertext can no longer be
// decrypted (or bootstrapped) reliably. The unchecked decryption is attached.
struct BudgetExhausted : Error {
  BudgetExhausted(const std::string& what, long long value = -1)
      : Error(what), value(value) {}
  long long value;
};

}  // namespace pql3
