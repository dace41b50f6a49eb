package com.shop;

import org.junit.Test;

public class Money_cents_Test {

    @Test
    public void testCents() throws Exception {
        Money target = new Money(0L);
        target.cents();
        org.junit.Assert.assertNotNull(target);
    }
}
