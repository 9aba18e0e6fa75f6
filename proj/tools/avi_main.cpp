#include "avi/cli.hpp"

int main(int argc, char** argv) { return avi::cli::run(argc, argv); }
