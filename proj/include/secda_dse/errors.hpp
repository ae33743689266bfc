#pragma once

#include <stdexcept>
#include <string>

namespace secda_dse {

// Base of every domain error. `code()` is the machine-readable tag used by the
// HTTP service and the CLI diagnostics.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define SECDA_DSE_DEFINE_ERROR(Name, tag)                                   \
    class Name : public Error {                                             \
    public:                                                                 \
        explicit Name(const std::string& message) : Error(tag, message) {}  \
    }

SECDA_DSE_DEFINE_ERROR(ParseError, "parse_error");
SECDA_DSE_DEFINE_ERROR(UnsupportedTemplate, "unsupported_template");
SECDA_DSE_DEFINE_ERROR(ProfileMissingModule, "profile_missing_module");
SECDA_DSE_DEFINE_ERROR(DuplicatePoint, "duplicate_point");
SECDA_DSE_DEFINE_ERROR(StorageError, "storage_error");
SECDA_DSE_DEFINE_ERROR(UnknownMetric, "unknown_metric");
SECDA_DSE_DEFINE_ERROR(BudgetExceeded, "budget_exceeded");
SECDA_DSE_DEFINE_ERROR(ProposalUnparseable, "proposal_unparseable");
SECDA_DSE_DEFINE_ERROR(ProviderUnreachable, "provider_unreachable");
SECDA_DSE_DEFINE_ERROR(SpaceExhausted, "space_exhausted");
SECDA_DSE_DEFINE_ERROR(UnknownPoint, "unknown_point");
SECDA_DSE_DEFINE_ERROR(VerdictConflict, "verdict_conflict");
SECDA_DSE_DEFINE_ERROR(WorkspaceLocked, "workspace_locked");
SECDA_DSE_DEFINE_ERROR(PortInUse, "port_in_use");

#undef SECDA_DSE_DEFINE_ERROR

// Names the offending field so callers can point at the bad input.
class ValidationError : public Error {
public:
    ValidationError(std::string field, const std::string& message)
        : Error("validation_error", message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class MissingArtifact : public Error {
public:
    explicit MissingArtifact(std::string artifact)
        : Error("missing_artifact", "missing artifact: " + artifact), artifact_(std::move(artifact)) {}

    const std::string& artifact() const noexcept { return artifact_; }

private:
    std::string artifact_;
};

// Carries whatever the external tool printed so the failure can be diagnosed.
class ExternalToolFailure : public Error {
public:
    ExternalToolFailure(const std::string& message, std::string diagnostics)
        : Error("external_tool_failure", message), diagnostics_(std::move(diagnostics)) {}

    const std::string& diagnostics() const noexcept { return diagnostics_; }

private:
    std::string diagnostics_;
};

}  // namespace secda_dse
