#include <doctest.h>

TEST_SUITE_BEGIN("gnn");

TEST_SUITE_END();
