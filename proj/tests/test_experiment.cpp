#include "doctest.h"
#include "qice/lattice.hpp"

TEST_CASE("placeholder experiment") { CHECK(true); }
