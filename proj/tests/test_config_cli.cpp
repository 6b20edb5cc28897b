#include <doctest.h>

TEST_SUITE_BEGIN("config_cli");

TEST_SUITE_END();
