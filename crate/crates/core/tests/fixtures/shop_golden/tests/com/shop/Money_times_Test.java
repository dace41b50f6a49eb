package com.shop;

import org.junit.Test;

public class Money_times_Test {

    @Test
    public void testTimes() throws Exception {
        Money target = new Money(0L);
        target.times(0);
        org.junit.Assert.assertNotNull(target);
    }
}
