#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace atp {

// Base class for all library errors.
class error : public std::runtime_error {
  public:
    explicit error(const std::string &msg) : std::runtime_error(msg) {}
};

// Malformed arguments: bad shapes, non-finite entries, unparseable files.
class invalid_input_error : public error {
  public:
    explicit invalid_input_error(const std::string &msg) : error(msg) {}
};

// Input is structurally valid but degenerate (all-zero spectrum, zero-norm matrix).
class degenerate_input_error : public error {
  public:
    explicit degenerate_input_error(const std::string &msg) : error(msg) {}
};

// Iterative method failed to converge within its iteration cap.
class numeric_error : public error {
  public:
    numeric_error(const std::string &msg, std::size_t iterations)
        : error(msg + " (after " + std::to_string(iterations) + " iterations)"),
          iterations_(iterations) {}

    std::size_t iterations() const { return iterations_; }

  private:
    std::size_t iterations_;
};

// A fitted component collapsed and could not be re-drawn.
class degenerate_component_error : public error {
  public:
    degenerate_component_error(const std::string &msg, std::size_t component)
        : error(msg + " (component " + std::to_string(component) + ")"),
          component_(component) {}

    std::size_t component() const { return component_; }

  private:
    std::size_t component_;
};

// Orthogonalization hit a column whose norm collapsed.
class rank_deficiency_error : public error {
  public:
    rank_deficiency_error(const std::string &msg, std::size_t column)
        : error(msg + " (column " + std::to_string(column) + ")"), column_(column) {}

    std::size_t column() const { return column_; }

  private:
    std::size_t column_;
};

// A caller violated a documented precondition.
class precondition_error : public error {
  public:
    explicit precondition_error(const std::string &msg) : error(msg) {}
};

// Benchmark run refused because the predicted working set exceeds the budget.
class memory_budget_error : public error {
  public:
    memory_budget_error(const std::string &msg, std::size_t predicted_bytes,
                        std::size_t budget_bytes)
        : error(msg + ": predicted " + std::to_string(predicted_bytes) +
                " bytes, budget " + std::to_string(budget_bytes) + " bytes"),
          predicted_bytes_(predicted_bytes), budget_bytes_(budget_bytes) {}

    std::size_t predicted_bytes() const { return predicted_bytes_; }
    std::size_t budget_bytes() const { return budget_bytes_; }

  private:
    std::size_t predicted_bytes_;
    std::size_t budget_bytes_;
};

} // namespace atp
