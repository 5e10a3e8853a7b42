#ifndef MIDZUNO_ERRORS_HPP
#define MIDZUNO_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace midzuno {

// Failure to read or write a file. Malformed content is reported as
// std::invalid_argument instead.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace midzuno

#endif  // MIDZUNO_ERRORS_HPP
