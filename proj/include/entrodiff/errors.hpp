#pragma once

#include <stdexcept>
#include <string>

namespace entrodiff {

/// Input outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Reaction substepping gave up (too many halvings).
class StiffnessError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A condition the algorithms guarantee was violated anyway.
class InternalError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace entrodiff
