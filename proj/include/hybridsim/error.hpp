#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hybridsim {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define HYBRIDSIM_ERROR(Name)                     \
    class Name : public Error {                   \
    public:                                       \
        using Error::Error;                       \
    }

HYBRIDSIM_ERROR(SchedulingInPast);
HYBRIDSIM_ERROR(TransitionConflict);
HYBRIDSIM_ERROR(Unauthorized);
HYBRIDSIM_ERROR(OverlappingMaintenance);
HYBRIDSIM_ERROR(InvalidJob);
HYBRIDSIM_ERROR(UnknownPath);
HYBRIDSIM_ERROR(UnknownJob);
HYBRIDSIM_ERROR(DoubleSettle);
HYBRIDSIM_ERROR(InfeasibleProfile);
HYBRIDSIM_ERROR(UnknownBaseModel);
HYBRIDSIM_ERROR(MissingBaseline);
HYBRIDSIM_ERROR(EmptyTrace);
HYBRIDSIM_ERROR(IoError);

#undef HYBRIDSIM_ERROR

/// Scenario validation failure. Carries every problem found, each prefixed
/// with the offending field path (e.g. `traffic[1].model`).
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> problems)
        : Error(join(problems)), problems_(std::move(problems)) {}

    const std::vector<std::string>& problems() const { return problems_; }

private:
    static std::string join(const std::vector<std::string>& problems) {
        std::string out;
        for (const auto& p : problems) {
            if (!out.empty()) out += "; ";
            out += p;
        }
        return out;
    }

    std::vector<std::string> problems_;
};

}  // namespace hybridsim
