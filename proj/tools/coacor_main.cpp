#include "coacor/cli/app.hpp"

int main(int argc, char** argv) { return coacor::cli::run(argc, argv); }
