#pragma once

#include <stdexcept>
#include <string>

namespace ctxppi {

// Input/file problems: the CLI maps these to exit code 2.
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Everything below maps to exit code 1.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ContractViolation : std::runtime_error {
    explicit ContractViolation(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ContextRejected : std::runtime_error {
    std::string context_id;
    std::size_t size;
    ContextRejected(std::string ctx, std::size_t n)
        : std::runtime_error("context '" + ctx + "' rejected: largest component has " +
                             std::to_string(n) + " nodes"),
          context_id(std::move(ctx)),
          size(n) {}
};

struct MissingParent : std::runtime_error {
    std::string subtype;
    explicit MissingParent(std::string s)
        : std::runtime_error("subtype '" + s + "' has no parent cell type"), subtype(std::move(s)) {}
};

struct DegenerateGraph : std::runtime_error {
    explicit DegenerateGraph(const std::string& msg) : std::runtime_error(msg) {}
};

struct SamplingExhausted : std::runtime_error {
    explicit SamplingExhausted(const std::string& msg) : std::runtime_error(msg) {}
};

struct GeneNotFound : std::runtime_error {
    explicit GeneNotFound(const std::string& gene)
        : std::runtime_error("gene '" + gene + "' has no embedding in any context") {}
};

struct EmptyDataset : std::runtime_error {
    explicit EmptyDataset(const std::string& msg) : std::runtime_error(msg) {}
};

struct InsufficientContexts : std::runtime_error {
    explicit InsufficientContexts(const std::string& msg) : std::runtime_error(msg) {}
};

struct DegenerateVector : std::runtime_error {
    explicit DegenerateVector(const std::string& msg) : std::runtime_error(msg) {}
};

struct CorruptCheckpoint : std::runtime_error {
    explicit CorruptCheckpoint(const std::string& msg) : std::runtime_error(msg) {}
};

struct UnsupportedVersion : std::runtime_error {
    explicit UnsupportedVersion(const std::string& msg) : std::runtime_error(msg) {}
};

struct ResumeMismatch : std::runtime_error {
    explicit ResumeMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

struct SpecError : std::runtime_error {
    explicit SpecError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ctxppi
