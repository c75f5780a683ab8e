/*
 * error.hh
 *
 * error category carried by every exception thrown from this library
 */

#ifndef ABSIM_ERROR_HH_
#define ABSIM_ERROR_HH_

#include <stdexcept>
#include <string>

namespace absim {

enum class errc {
  syntax,      /* malformed expression text */
  domain,      /* non-finite value during evaluation */
  argument,    /* precondition violation on an operation argument */
  certificate, /* missing or invalid stability certificate */
  condition,   /* precision inequality violated */
  synthesis,   /* infeasible control objective */
  divergence,  /* integration blew up */
  config,      /* malformed configuration or input file */
  io           /* filesystem failure */
};

inline const char* errc_name(errc k) {
  switch (k) {
    case errc::syntax: return "syntax";
    case errc::domain: return "domain";
    case errc::argument: return "argument";
    case errc::certificate: return "certificate";
    case errc::condition: return "condition";
    case errc::synthesis: return "synthesis";
    case errc::divergence: return "divergence";
    case errc::config: return "config";
    case errc::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(errc kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  errc kind() const noexcept { return kind_; }

 private:
  errc kind_;
};

}  // namespace absim

#endif /* ABSIM_ERROR_HH_ */
