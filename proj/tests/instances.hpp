#pragma once

#include "mjlab/gradcheck.hpp"

namespace testutil {

using mjlab::InstanceFactory;

}  // namespace testutil
