#ifndef MAXMS_MAXMS_HPP
#define MAXMS_MAXMS_HPP

// Convenience umbrella: the whole library in one include.

#include "maxms/assembly.hpp"
#include "maxms/basis.hpp"
#include "maxms/coarse.hpp"
#include "maxms/coeff.hpp"
#include "maxms/common.hpp"
#include "maxms/config.hpp"
#include "maxms/element.hpp"
#include "maxms/fine.hpp"
#include "maxms/harness.hpp"
#include "maxms/mesh.hpp"
#include "maxms/report.hpp"
#include "maxms/solver.hpp"
#include "maxms/spectral.hpp"
#include "maxms/threadpool.hpp"

#endif
