package com.acme;

import org.junit.Assert;
import org.junit.Test;

public class ParseIntTest {
    @Test
    public void parsesDigits() {
        int n = Integer.parseInt("42");
        Assert.assertEquals("wrong value", 42, n);
        Assert.assertNotNull(Integer.valueOf(n));
    }

    @Test
    public void rejectsLetters() {
        try {
            Integer.parseInt("x");
            Assert.fail("expected an exception");
        } catch (NumberFormatException e) {
            // expected
        }
    }
}
