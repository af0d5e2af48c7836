// errors.hpp — Error types shared across the library

#pragma once

#include <stdexcept>
#include <string>

namespace nlbath {

// Time step too coarse for the frequency content it has to resolve.
struct resolution_error : std::runtime_error {
    explicit resolution_error(const std::string& what) : std::runtime_error(what) {}
};

// Endpoint-singular quadrature whose integrand keeps growing under refinement.
struct divergent_integrand_error : std::runtime_error {
    explicit divergent_integrand_error(const std::string& what) : std::runtime_error(what) {}
};

// Scenario/config parsing failure; the message carries line and key context.
struct parse_error : std::runtime_error {
    explicit parse_error(const std::string& what) : std::runtime_error(what) {}
};

// Coupling or kernel failed a declared validation gate.
struct validation_error : std::runtime_error {
    explicit validation_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace nlbath
