# Package marker for src imports.
