#include "flowdet/cli.hpp"

int main(int argc, char** argv) { return flowdet::dispatch(argc, argv); }
