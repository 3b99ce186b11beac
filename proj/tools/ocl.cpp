#include "ocl/commands.hpp"

int main(int argc, char** argv) { return ocl::cli_main(argc, argv); }
