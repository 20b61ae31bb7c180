#ifndef VOXBAG_ERROR_HPP_
#define VOXBAG_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace voxbag {

// Error categories map 1:1 onto CLI exit codes.
enum class Errc : int {
    config = 2,       // bad configuration, shapes, arguments
    data = 3,         // missing/invalid input data
    numeric = 4,      // numeric failure (NaN loss, divergence)
    persistence = 5,  // bundle/file round-trip failures
};

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

    Errc code() const noexcept { return code_; }
    int exit_code() const noexcept { return static_cast<int>(code_); }

private:
    Errc code_;
};

}  // namespace voxbag

#endif  // VOXBAG_ERROR_HPP_
