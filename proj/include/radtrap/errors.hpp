#pragma once

#include <stdexcept>
#include <string>

namespace radtrap {

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
 public:
  using std::runtime_error::runtime_error;
};

/// Population inversion (rho_aa > rho_bb) where the trapping model is invalid.
class InversionError : public Error
{
 public:
  using Error::Error;
};

class NoConvergence : public Error
{
 public:
  using Error::Error;
};

class StepSizeUnderflow : public Error
{
 public:
  using Error::Error;
};

class DomainError : public Error
{
 public:
  using Error::Error;
};

class DegenerateGrid : public Error
{
 public:
  using Error::Error;
};

/// Raised when a plateau estimate is too noisy to be trusted.
class NotConverged : public Error
{
 public:
  using Error::Error;
};

class InvalidArgument : public Error
{
 public:
  using Error::Error;
};

}  // namespace radtrap
