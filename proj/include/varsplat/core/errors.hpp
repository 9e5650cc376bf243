#pragma once

#include <stdexcept>
#include <string>

namespace varsplat {

struct DegenerateProjection : std::runtime_error {
    explicit DegenerateProjection(const std::string& msg) : std::runtime_error(msg) {}
};

struct MissingContributors : std::runtime_error {
    explicit MissingContributors(const std::string& msg) : std::runtime_error(msg) {}
};

struct EmptyMask : std::runtime_error {
    explicit EmptyMask(const std::string& msg) : std::runtime_error(msg) {}
};

struct EmptySubmap : std::runtime_error {
    explicit EmptySubmap(const std::string& msg) : std::runtime_error(msg) {}
};

struct NoValidDepth : std::runtime_error {
    explicit NoValidDepth(const std::string& msg) : std::runtime_error(msg) {}
};

struct EmptyOverlap : std::runtime_error {
    explicit EmptyOverlap(const std::string& msg) : std::runtime_error(msg) {}
};

struct RegistrationDiverged : std::runtime_error {
    explicit RegistrationDiverged(const std::string& msg) : std::runtime_error(msg) {}
};

struct SingularSystem : std::runtime_error {
    explicit SingularSystem(const std::string& msg) : std::runtime_error(msg) {}
};

struct MissingIndexFile : std::runtime_error {
    explicit MissingIndexFile(const std::string& msg) : std::runtime_error(msg) {}
};

struct EmptyAssociation : std::runtime_error {
    explicit EmptyAssociation(const std::string& msg) : std::runtime_error(msg) {}
};

struct InsufficientPoses : std::runtime_error {
    explicit InsufficientPoses(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace varsplat
