import sys

from .mapcsim import main

if __name__ == '__main__':
    sys.exit(main())
