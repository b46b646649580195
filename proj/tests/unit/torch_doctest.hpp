#pragma once

// libtorch's logging header defines glog-style CHECK macros that collide with
// doctest's; drop them so the test macros win.
#include <torch/torch.h>

#undef CHECK
#undef CHECK_EQ
#undef CHECK_NE
#undef CHECK_LT
#undef CHECK_LE
#undef CHECK_GT
#undef CHECK_GE
#undef CHECK_NOTNULL

#include "doctest.h"
