# Copyright © 2021 by Shun Huang. All rights reserved.
# Licensed under MIT License.
# See LICENSE in the project root for license information.

"""Allow ``python -m shapefit``."""

from shapefit import cli

raise SystemExit(cli.main())
