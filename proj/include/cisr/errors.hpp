#pragma once

#include <stdexcept>
#include <string>

namespace cisr {

// Base class for all library errors. Subtypes exist so callers (and tests)
// can distinguish failure causes without parsing messages.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --- model construction ---
struct DimensionMismatch final : Error { using Error::Error; };
struct NonStochasticRow final : Error { using Error::Error; };
struct UnsafeNotTerminal final : Error { using Error::Error; };

// --- interventions ---
struct TriggerOutOfRange final : Error { using Error::Error; };
struct ResetIntoTrigger final : Error { using Error::Error; };

// --- constrained solver ---
struct NegativeLambda final : Error { using Error::Error; };
struct ZeroMassDegenerate final : Error { using Error::Error; };
struct BudgetZero final : Error { using Error::Error; };

// --- curriculum policies ---
struct StageOutOfRange final : Error { using Error::Error; };
struct UnknownIntervention final : Error { using Error::Error; };

// --- Bayesian optimization ---
struct SingularKernel final : Error { using Error::Error; };
struct OptFailed final : Error { using Error::Error; };
struct EmptySpace final : Error { using Error::Error; };

// --- grid maps ---
struct BadCharacter final : Error { using Error::Error; };
struct RaggedRows final : Error { using Error::Error; };
struct MissingStart final : Error { using Error::Error; };

// --- landing craft geometry ---
struct GeometryDegenerate final : Error { using Error::Error; };

// --- exhaustive verification ---
struct BudgetExceeded final : Error { using Error::Error; };
struct NoFeasible final : Error { using Error::Error; };

// --- experiment harness ---
struct ConfigInvalid final : Error { using Error::Error; };

}  // namespace cisr
