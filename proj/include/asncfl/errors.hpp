#pragma once

#include <stdexcept>
#include <string>

namespace asncfl {

// Base for every error raised by the library. Callers that only need to
// isolate failures (the batch runner) catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// A parameter update with zero norm. client_id is -1 when the vector is not
// attached to a client.
class DegenerateVectorError : public Error {
 public:
  explicit DegenerateVectorError(int client_id)
      : Error(client_id < 0
                  ? std::string("degenerate (zero-norm) vector")
                  : "degenerate (zero-norm) update from client " +
                        std::to_string(client_id)),
        client_id_(client_id) {}
  int client_id() const { return client_id_; }

 private:
  int client_id_;
};

class StaleCacheError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(int epoch, double loss)
      : Error("training diverged at epoch " + std::to_string(epoch) +
              " (loss " + std::to_string(loss) + ")"),
        epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

class ConstraintError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace asncfl
