#include "sslt/cli.hpp"

int main(int argc, char** argv) { return sslt::cli::run(argc, argv); }
