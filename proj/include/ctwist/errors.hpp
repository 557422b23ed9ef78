#pragma once

#include <stdexcept>
#include <string>

namespace ctwist {

// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Precondition violation on a function argument (bad dimension, negative count, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

// A sector frequency omega_m is numerically zero, so the pumped closed form
// (which divides by omega_m) is undefined at the requested parameters.
class ResonanceError : public Error {
public:
    using Error::Error;
};

// A density matrix failed a physicality check (Hermiticity, unit trace, or
// positive semi-definiteness beyond tolerance).
class NonPhysicalState : public Error {
public:
    using Error::Error;
};

// The mean-spin direction is undefined (fully dephased state), so squeezing
// parameters relative to the mean spin cannot be formed.
class DepolarizedState : public Error {
public:
    using Error::Error;
};

// Block-diagonal evolution was requested for a Hamiltonian that couples
// atomic sectors (tunneling term present).
class BlockFormInvalid : public Error {
public:
    using Error::Error;
};

// Population reached the top retained Fock level above tolerance: the photon
// cutoff is too small for the requested evolution.
class CutoffExceeded : public Error {
public:
    using Error::Error;
};

// The fixed integrator step violates conservation checks (trace drift), i.e.
// the step is too large for the problem's fastest rates.
class StepTooLarge : public Error {
public:
    using Error::Error;
};

// Dense joint-space evolution was requested above the supported dimension.
class DimensionTooLarge : public Error {
public:
    using Error::Error;
};

// Scenario configuration is malformed, inconsistent, or uses unknown keys.
class ScenarioError : public Error {
public:
    using Error::Error;
};

// An engine raised an error while executing a scenario; the message carries
// the sweep index and time coordinate along with the underlying cause.
class EngineFailure : public Error {
public:
    using Error::Error;
};

// An adaptive quadrature failed to converge to the requested tolerance.
class QuadratureError : public Error {
public:
    using Error::Error;
};

// A checkpoint file is malformed or inconsistent with the requesting state.
class CheckpointError : public Error {
public:
    using Error::Error;
};

} // namespace ctwist
