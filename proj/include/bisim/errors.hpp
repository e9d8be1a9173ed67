#pragma once

#include <stdexcept>
#include <string>

namespace bisim {

/// Iterative solver failed to reach its tolerance within the iteration cap.
class solver_error : public std::runtime_error {
public:
    explicit solver_error(const std::string& what) : std::runtime_error(what) {}
};

/// A fitted model is missing entries required by the caller.
class model_error : public std::runtime_error {
public:
    explicit model_error(const std::string& what) : std::runtime_error(what) {}
};

/// Gradient descent produced a non-finite loss.
class divergence_error : public std::runtime_error {
public:
    explicit divergence_error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input file; message carries line/column context.
class parse_error : public std::runtime_error {
public:
    explicit parse_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace bisim
